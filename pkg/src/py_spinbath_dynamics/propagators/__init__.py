"""Time-evolution engines for the compiled system-bath Hamiltonians."""
