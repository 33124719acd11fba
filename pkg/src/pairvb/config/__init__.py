from .loader import load_config, save_config
