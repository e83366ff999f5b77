"""Exception hierarchy shared across stages."""


class BeyondWordsError(Exception):
    pass


class ConfigError(BeyondWordsError):
    pass


class CorpusError(BeyondWordsError):
    pass


class EmbeddingError(BeyondWordsError):
    pass


class DimensionMismatch(EmbeddingError):
    pass


class TrainingDiverged(BeyondWordsError):
    def __init__(self, epoch: int, ratio, loss: float):
        super().__init__(f"training diverged at epoch {epoch} for ratio {ratio} (loss={loss})")
        self.epoch = epoch
        self.ratio = ratio
        self.loss = loss


class ExternalServiceError(BeyondWordsError):
    """A remote model endpoint failed after all retries."""


class ParseError(BeyondWordsError):
    """Model output did not contain a usable structured block."""


class StageError(BeyondWordsError):
    pass


class MissingArtifact(StageError):
    def __init__(self, stage: str, detail: str = ""):
        msg = f"missing or invalid artifact from stage {stage!r}"
        super().__init__(f"{msg}: {detail}" if detail else msg)
        self.stage = stage
