"""Edge multiscale finite elements for semilinear convection-diffusion-reaction problems."""
__version__ = "0.1.0"
