"""spatial-aoi: age of information in random wireless networks.

Simulates a base station surrounded by Poisson-distributed nodes and
interferers under slotted ALOHA and Rayleigh fading, and evaluates the
expected age of broadcast (base station to every node) and age of
collection (every node to the base station) three ways: Monte Carlo,
exact per-realization formulas, and instance-independent bounds.

Key components:
    - `geometry`: Point processes, realizations and their text format
    - `channel`: Success probabilities and per-slot reception draws
    - `age_dynamics`: Age recursion, AoB/AoC and delay measurement
    - `monte_carlo`: Seeded, parallel estimation with confidence intervals
    - `analytics`: Exact EAoB/EAoC, bounds and the delay law
    - `experiment`: Parameter sweeps and CSV output
    - `config`: Sweep configuration files (TOML)
    - `cli`: Command-line interface
    - `util`: Logging and small helpers
"""

__version__ = "0.1.0"
__license__ = "MIT"
