"""
Version information for qfi-bell.
"""

VERSION = "1.0.0"
