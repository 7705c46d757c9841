"""Numerical engines"""
