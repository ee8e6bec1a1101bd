# End-to-end tests: CLI, gateway and stub remote, all in-process.
