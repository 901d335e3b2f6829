from .decoder import DecodeResult, decode_user
from .engine import Engine, Token, Transcript, canonical_order, check_conservation
from .nofb import message_demands, run_delivery_nofb
from .scheme import (
    SimReport,
    UnsupportedDemandError,
    run_delivery,
    seed_order_pools,
    seed_pools_from_cache,
)
