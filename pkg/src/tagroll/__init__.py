"""tagroll: an RFID roll-call system with a fully virtual reader.

Subsystems:

- ``tagroll.protocol``   -- reader wire format (frames, checksum, decoder)
- ``tagroll.simulator``  -- virtual 125 kHz reader and tag population
- ``tagroll.attendance`` -- scan-to-attendance middleware
- ``tagroll.store``      -- durable registry backed by an audit log
- ``tagroll.reporting``  -- CSV export and entry-method benchmark
- ``tagroll.gateway``    -- CLI, HTTP API and live event stream
"""

__version__ = "0.1.0"
