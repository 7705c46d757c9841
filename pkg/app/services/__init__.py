"""Service layer"""
from .document_loader import document_loader

__all__ = ['document_loader']
