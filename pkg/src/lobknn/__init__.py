"""K-nearest-neighbor resampling simulator for limit order books."""
