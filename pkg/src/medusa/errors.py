"""Exception hierarchy shared across the package."""


class MedusaError(Exception):
    """Base class for every error raised by medusa."""


class NotFound(MedusaError, LookupError):
    pass


class DecodeError(MedusaError, ValueError):
    """Bytes are not a canonical encoding of the expected structure."""


# ledger-core
class LedgerError(MedusaError):
    pass


class ChainLinkMismatch(LedgerError):
    pass


class NonSequentialNumber(LedgerError):
    pass


class DataHashMismatch(LedgerError):
    pass


class ChainNotVerified(LedgerError):
    pass


# identity
class IdentityError(MedusaError):
    pass


class DuplicateParticipant(IdentityError):
    pass


class InvalidPort(IdentityError, ValueError):
    pass


class InvalidAddress(IdentityError, ValueError):
    pass


class UnknownSigner(IdentityError):
    pass


# chaincode
class ChaincodeError(MedusaError):
    pass


class DuplicateAsset(ChaincodeError):
    pass


class UnregisteredSubmitter(ChaincodeError):
    pass


class InvalidAsset(ChaincodeError, ValueError):
    pass


class InvalidRange(ChaincodeError, ValueError):
    pass


class UnknownFunction(ChaincodeError):
    pass


# txflow
class TxFlowError(MedusaError):
    pass


class PolicyUnsatisfied(TxFlowError):
    pass


class BadClientSignature(TxFlowError):
    pass


class InvalidPolicy(TxFlowError, ValueError):
    pass


class ChannelMismatch(TxFlowError):
    pass


# netsim
class InvalidConfig(MedusaError, ValueError):
    pass


class TamperDetected(MedusaError):
    def __init__(self, peer_id: str, block_number: int | None, kind: str | None):
        super().__init__(f"peer {peer_id}: tamper detected at block {block_number} ({kind})")
        self.peer_id = peer_id
        self.block_number = block_number
        self.kind = kind


# ingest
class ParseError(MedusaError, ValueError):
    def __init__(self, reason: str, position: int = 0):
        super().__init__(f"{reason} (at column {position})")
        self.reason = reason
        self.position = position


class FileUnreadable(MedusaError, OSError):
    pass


class SubmissionFailure(MedusaError):
    pass
