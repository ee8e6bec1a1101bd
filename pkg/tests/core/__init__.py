# Tests for cheapet/core/ — pure domain logic, no HTTP or files beyond tmp_path.
