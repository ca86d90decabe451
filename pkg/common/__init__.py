"""
Common utilities for qfi-bell
"""
