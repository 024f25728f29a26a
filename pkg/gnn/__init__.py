"""Emulator architectures: equivariant GCN, GCN and the grid CNN baseline."""
