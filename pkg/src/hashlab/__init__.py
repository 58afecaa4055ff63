"""hashlab: networked hashtag coordination games and their measurement pipeline."""

__version__ = "0.1.0"
