"""q-semicircular workbench: series calculus, Fock traces, Wick bases, free SDE tools."""
