"""Sample-adaptive dropout with a spectral noise scorer."""
