# Test package for the transfer-learning workbench
