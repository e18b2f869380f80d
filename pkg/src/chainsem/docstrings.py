"""Common docstrings."""

from module_utilities.docfiller import DocFiller

_docstrings = """
Parameters
----------
chain | b : Blockchain
    Blockchain state ``[pool, managers, contractors, time]``.
cfg : Config
    Blockchain configuration: a chain together with its local nodes.
node : Node
    Local node holding programs and accounts.
managers | m : mapping of str to ManagerEntry
    Implicit accounts keyed by public key.
contractors | c : mapping of str to ContractorEntry
    Smart contracts keyed by public hash.
puk : str
    Public key of an implicit account (``"puk_..."``).
puh : str
    Public hash of a smart contract (``"puh_..."``).
oph : str
    Operation hash, key of the pool (``"oph_..."``).
nt : int
    Amount of tokens transferred.
fee : int
    Fee offered for the operation.
code : CodeRef
    Contract code: registry identifier with declared parameter and storage types.
param : str
    Serialized parameter value.
env : mapping of str to Ty
    Variable typing environment.
delta : mapping of str to TPair
    Contract typing environment, from public hash to ``Pair param storage``.
ambient : AmbientInfo, optional
    Chain-derived information used to type runtime literals.
seed : int
    Seed of the scheduling random number generator.
max_steps : int
    Upper bound on the number of transitions taken.
policy : str or SchedulingPolicy
    Scheduling policy.  One of ``"uniform"``, ``"accept-eager"``,
    ``"timeout-forcing"`` or a :class:`~chainsem.scheduler.SchedulingPolicy`.
assertions : str or sequence of str, optional
    Per-step invariant checks.  ``"all"``, ``"none"`` or names from
    :data:`~chainsem.invariants.CHECKS`.
depth : int
    Exploration depth, in transitions from the initial configuration.
"""


docfiller = DocFiller.from_docstring(_docstrings, combine_keys="parameters")
