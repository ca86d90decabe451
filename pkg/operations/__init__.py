"""
Numerical operation modules for qfi-bell.
"""
