# Tests package for cheapet
