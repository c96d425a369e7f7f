"""Correct-by-construction control from signal temporal logic.

The package builds a tree of set nodes and operator nodes from an STL
formula, computes the set nodes with reachability analysis, derives
time-varying control barrier functions from the tree, and runs an
online quadratic program that steers the system so the closed-loop
trajectory satisfies the formula.  A separate monitor checks recorded
trajectories against formulas and trees.
"""

__version__ = "0.1.0"
