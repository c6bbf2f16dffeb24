"""metallic-lab engine modules."""
