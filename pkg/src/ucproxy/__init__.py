"""Unit-commitment MILP toolkit with a nearest-neighbor cost proxy.

Pipeline: load a grid case, sample daily scenarios (demand, wind,
topology), solve each day's commitment MILP exactly, store the solved
pairs in an index, then answer new instances by nearest-neighbor lookup
instead of a fresh solve.
"""

__version__ = "0.1.0"
