"""
Основное приложение.

Содержит модули alias-free свёрточных сетей.
"""

from .modules.network import NetworkSpec, build_network, forward
from .modules.cli import main

__all__ = ['NetworkSpec', 'build_network', 'forward', 'main']
