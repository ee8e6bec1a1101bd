# Tests for cheapet/infrastructure/ — file formats, config and the HTTP client (mock transport).
