"""Federated backdoor defense simulation: AmGrad, adaptive OPTICS clustering and
adaptive clipping, with attack generators and baseline aggregators."""

__version__ = "0.1.0"
