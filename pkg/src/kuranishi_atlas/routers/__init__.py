"""HTTP routers of the atlas service."""
