//! Holds the acceptance run under `tests/`; the crate itself is empty.
