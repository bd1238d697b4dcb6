class SheetMidiError(Exception):
    pass


class InvalidArgumentError(SheetMidiError, ValueError):
    pass


class CorruptFeatureError(SheetMidiError, ValueError):
    pass


class BadMagicError(CorruptFeatureError):
    pass


class UnsupportedVersionError(CorruptFeatureError):
    pass


class TruncatedFeatureError(CorruptFeatureError):
    pass


class MidiParseError(SheetMidiError, ValueError):
    pass


class EmptyPieceError(SheetMidiError, ValueError):
    pass


class DegenerateImageError(SheetMidiError, ValueError):
    pass


class NotAChordError(SheetMidiError):
    """Component fails the chord-block rules; callers skip it."""


class FixtureSpecError(SheetMidiError, ValueError):
    pass
