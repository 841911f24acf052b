# Dephasing Lab - adiabatic transitions of a two-level system coupled to a bosonic reservoir
# Layout: config (files and environment), core (numerics), handlers (check and scan commands)
