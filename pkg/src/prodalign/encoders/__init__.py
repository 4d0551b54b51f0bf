from .stack import EncoderConfig, EncoderStack, freeze_first_layers, init_query_from_text

__all__ = ["EncoderConfig", "EncoderStack", "freeze_first_layers", "init_query_from_text"]
