"""Heterogeneous TPMS scaffolds in trivariate B-spline solids."""
