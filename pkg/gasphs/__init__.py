"""
Port-Hamiltonian models of gas pipelines and pipeline networks.
"""

__version__ = '1.0.0'
