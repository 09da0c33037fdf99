"""CTC phoneme decoding and phoneme-error-rate evaluation toolkit."""

from .core import (
    BLANK_INDEX,
    BLANK_SYMBOL,
    LogPosteriorGram,
    PhonemeInventory,
    PhonemeSequence,
    Utterance,
    french_inventory,
    load_inventory,
    read_posteriorgram,
    save_inventory,
    write_posteriorgram,
)

__version__ = "0.1.0"
