# Layer: core — pure Python + numpy/scipy, zero HTTP/file I/O imports.
# May import: stdlib, numpy, scipy.
# Must NOT import: httpx, fastapi, infrastructure/, gateway/.
