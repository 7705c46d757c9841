"""Stieltjes Calculus Service Application"""
__version__ = "1.0.0"
