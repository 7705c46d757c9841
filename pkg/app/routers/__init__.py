"""API Routers"""
from . import health, integrals, variation, mollify, ode

__all__ = ['health', 'integrals', 'variation', 'mollify', 'ode']
