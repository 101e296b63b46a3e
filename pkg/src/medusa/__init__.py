"""Medusa: tamper-evident audit-log storage on a permissioned ledger.

The package is organised by layer:

* :mod:`medusa.codec`     canonical text encoding and digests
* :mod:`medusa.identity`  participants, credentials and signatures
* :mod:`medusa.ledger`    hash-chained blocks, verification, world state
* :mod:`medusa.chaincode` the WebLogData contract (append + query)
* :mod:`medusa.txflow`    endorse / order / validate / commit
* :mod:`medusa.netsim`    deterministic multi-peer simulation
* :mod:`medusa.ingest`    Combined Log Format ingestion
* :mod:`medusa.cli`       the ``medusa`` command
"""

__version__ = "0.1.0"
