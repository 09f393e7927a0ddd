"""Kernel density modeling of radar sea-clutter amplitudes."""
