"""Bag-emptying event detection from wearable accelerometer and RSSI streams."""
__version__ = "0.1.0"
