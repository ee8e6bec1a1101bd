# Layer: gateway — HTTP surface wiring core services to infrastructure adapters.
# May import: core/, infrastructure/, fastapi, uvicorn.
