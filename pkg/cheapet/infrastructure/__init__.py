# Layer: infrastructure — adapters for external I/O (files, HTTP, config, logging).
# fastapi is allowed ONLY inside mocks/ — nowhere else in this package.
# May import: core/, stdlib, numpy, httpx.
# Must NOT import: gateway/.
