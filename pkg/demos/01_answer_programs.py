"""Walk through the answer-program dialect: parse, execute, count, modify.

Answer programs are tiny straight-line Python-style scripts whose final
`ans` binding is the numeric answer.  This demo parses the corpus programs,
executes them, measures their complexity and extends one with an
arithmetic modification chain.
"""

from potselect import ModificationChain, complexity, execute, modify_answer, parse

BOLTS = """\
bolts_of_blue_fiber = 2
bolts_of_white_fiber = bolts_of_blue_fiber / 2
ans = bolts_of_blue_fiber + bolts_of_white_fiber"""

DUCK = """\
total_eggs = 16
eaten_eggs = 3
baked_eggs = 4
sold_eggs = total_eggs - eaten_eggs - baked_eggs
dollars_per_egg = 2
ans = sold_eggs * dollars_per_egg"""

print("== parsing and executing ==")
program = parse(BOLTS)
print(f"statements: {len(program.statements)}")
print(f"bolts answer: {execute(program)}")          # 3.0
print(f"duck-egg answer: {execute(parse(DUCK))}")   # 18.0

print()
print("== complexity is the number of line breaks ==")
print(f"bolts: {complexity(BOLTS)}  duck: {complexity(DUCK)}")

print()
print("== modification chains raise answer complexity ==")
# one multiplication step, written into the program as a temp rebinding
doubled = modify_answer(program, ModificationChain((("*", 2.0),)))
print(doubled.source_text)
print(f"doubled answer: {execute(doubled)}")        # 6.0

print()
# the five-step chain from the duck-egg walkthrough: x3 +8 +5 +9 -1
chain = ModificationChain((("*", 3.0), ("+", 8.0), ("+", 5.0), ("+", 9.0), ("-", 1.0)))
extended = modify_answer(parse(DUCK), chain)
print(extended.source_text)
print(f"extended answer: {execute(extended)}")      # 75.0

print()
print("== errors are precise ==")
for bad in ["x = y + 1", "ans = 1 / 0 + 0", "a = 1"]:
    try:
        execute(parse(bad))
    except Exception as exc:
        print(f"{bad!r:18} -> {type(exc).__name__}: {exc}")
