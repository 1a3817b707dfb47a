"""Process entry point: CLI, HTTP API, live event stream, reader bridge."""
