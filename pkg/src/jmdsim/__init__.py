"""Joint jammer mitigation and data detection for the MU-MIMO uplink."""
