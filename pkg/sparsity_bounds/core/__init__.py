"""Special functions, information measures and the sampling-rate bounds."""
