"""Surrogate pricers trained on smooth-offset prices."""
