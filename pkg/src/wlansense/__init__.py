"""WLAN sensing toolkit: sensing sequences, ambiguity analysis, CSI feedback
quantization, channel modelling, protocol simulation and accuracy evaluation."""
__version__ = "0.1.0"
