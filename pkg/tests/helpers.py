from adtfree.parser import parse_problem

from conftest import PROBLEMS

REVERSE = (PROBLEMS / "reverse.chc").read_text()
LIST_HEADER = REVERSE.split("\n\n")[0] + """
:- pred p(int).
:- pred q(int).
:- mode p(in).
:- mode q(in).
"""


def goal(text: str, header: str = LIST_HEADER):
    """Parse ``false :- text.`` under ``header`` and return the clause."""
    cs = parse_problem(header + f"\nfalse :- {text}.\n").clause_set
    return cs.goals()[0], cs.signature


def body(text: str, header: str = LIST_HEADER):
    return goal(text, header)[0].body


def reverse_problem():
    return parse_problem(REVERSE).clause_set
