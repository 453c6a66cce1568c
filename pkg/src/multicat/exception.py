class UserInputError(RuntimeError):
    """Raised for command line misuse and unreadable user provided files."""
