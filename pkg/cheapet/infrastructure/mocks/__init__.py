# Layer: infrastructure/mocks — wire-compatible stub of the remote model.
# Shipped in the wheel so `cheapet stub-remote` works after install.
