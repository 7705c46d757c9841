"""Utility functions"""
from .logger import logger
from .auth import verify_api_key

__all__ = ['logger', 'verify_api_key']
