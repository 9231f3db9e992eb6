import ipaddress

from ..errors import NonLoopbackRefused

OVERRIDE_FLAG = "--unsafe-allow-non-loopback"


def ensure_loopback(host: str, allow_non_loopback: bool = False) -> str:
    """Return ``host`` if it is a loopback literal (or ``localhost``).

    Hostnames other than ``localhost`` are refused without resolving them,
    so nothing leaves the machine before the check.
    """
    if allow_non_loopback:
        return host
    if host == "localhost":
        return "127.0.0.1"
    try:
        addr = ipaddress.ip_address(host)
    except ValueError:
        raise NonLoopbackRefused(
            f"{host!r} is not a loopback address literal; pass {OVERRIDE_FLAG} to override") from None
    if not addr.is_loopback:
        raise NonLoopbackRefused(f"{host} is not loopback; pass {OVERRIDE_FLAG} to override")
    return host
