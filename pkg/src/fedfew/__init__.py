"""Deterministic federated few-shot learning simulator.

A shared server model (MLP encoder + base-class classifier) is trained with
FedAvg across clients while each client keeps a private set-attention model
for episodic N-way K-shot adaptation.  Knowledge moves in both directions:
client-to-server through a mutual-information objective on support
representations, server-to-client through partial knowledge distillation
with a per-query adaptive temperature.
"""

__version__ = "0.1.0"
