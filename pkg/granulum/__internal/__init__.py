"""Infrastructure shared by all granulum objects."""
