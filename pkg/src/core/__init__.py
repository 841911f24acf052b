# Numerical core: system, Kato transport, reservoir, phase kernels, Dyson terms, oracle
