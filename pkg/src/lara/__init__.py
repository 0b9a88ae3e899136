"""Long-term antepartum FHR risk analysis: rubric scoring, a 1-D SE-residual
CNN, sliding-window fusion into a risk map, and Grad-CAM attribution."""

__version__ = "0.1.0"
