"""IPv4 and MAC address helpers.

Addresses are plain ints everywhere inside the package; text forms only
appear at the edges (feeds, scenario files, reports).
"""

IP_MAX = (1 << 32) - 1
MAC_MAX = (1 << 48) - 1


def ip_to_int(text):
    """Parse dotted-quad IPv4 into an int. Raises ValueError on junk."""
    parts = text.strip().split(".")
    if len(parts) != 4:
        raise ValueError("bad IPv4 address %r" % text)
    value = 0
    for part in parts:
        if not part.isdigit():
            raise ValueError("bad IPv4 address %r" % text)
        octet = int(part)
        if octet > 255:
            raise ValueError("bad IPv4 address %r" % text)
        value = (value << 8) | octet
    return value


def int_to_ip(value):
    return "%d.%d.%d.%d" % (
        (value >> 24) & 0xFF,
        (value >> 16) & 0xFF,
        (value >> 8) & 0xFF,
        value & 0xFF,
    )


def mac_to_int(text):
    """Parse aa:bb:cc:dd:ee:ff into an int."""
    parts = text.strip().lower().split(":")
    if len(parts) != 6:
        raise ValueError("bad MAC address %r" % text)
    value = 0
    for part in parts:
        if len(part) != 2:
            raise ValueError("bad MAC address %r" % text)
        try:
            value = (value << 8) | int(part, 16)
        except ValueError:
            raise ValueError("bad MAC address %r" % text) from None
    return value


def int_to_mac(value):
    return ":".join("%02x" % ((value >> shift) & 0xFF) for shift in range(40, -8, -8))


def prefix_mask(length):
    """Network mask for a prefix length, as an int."""
    if length == 0:
        return 0
    return (IP_MAX << (32 - length)) & IP_MAX
