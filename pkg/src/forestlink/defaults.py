"""Shared defaults, collected in one module so every tunable is auditable.

CLI flags and config files override these; nothing else in the package
hardcodes a threshold or an antenna constant.
"""

SPEED_OF_LIGHT_M_S = 299_792_458.0

# EU868 LoRa uplink as used by the bundled presets.
CARRIER_FREQUENCY_HZ = 868e6

# Small-scale fluctuations are isolated with a moving window of +/- half
# this wavelength (~0.34538 m at 868 MHz).
WAVELENGTH_M = SPEED_OF_LIGHT_M_S / CARRIER_FREQUENCY_HZ

# Log-distance models are anchored at 1 m; geometries closer than this are
# outside model validity and rejected.
REFERENCE_DISTANCE_M = 1.0

# Pocket height of a standing adult carrying the receiver.
RX_ANTENNA_HEIGHT_M = 1.3

# Fraction of transmitter-receiver angular arrangements a gain/polarization
# value must cover when reducing an angular pattern to a single link term.
GUARANTEE_LEVEL = 0.75

TX_POWER_DBM = 14.0
TX_GAIN_DBI = 0.0

# Effective receiver gain and polarization mismatch of a pocket-worn dipole,
# reduced from simulated angular statistics at the default guarantee level.
RX_EFFECTIVE_GAIN_DBI = -11.0
POLARIZATION_LOSS_DB = -6.2

# Receiver thresholds for an SF7 / 125 kHz class transceiver.  These are
# datasheet-typical figures, configurable per run.
SENSITIVITY_DBM = -123.0
SNR_FLOOR_DB = -7.5

# Thermal noise in 125 kHz (-174 dBm/Hz + 51 dB) plus a 6 dB noise figure.
NOISE_FLOOR_DBM = -117.0

# One message every four seconds (duty-cycle compliant beaconing).
MESSAGE_RATE_HZ = 0.25

EARTH_RADIUS_M = 6_371_000.0
