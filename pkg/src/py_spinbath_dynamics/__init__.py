"""Exact dynamics of central spins decohered by a spin bath."""
