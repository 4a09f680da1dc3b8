"""Decode block placements with invariant masks, then watch a world with no room run dry."""

from opkernel.guardrail import conflict_world, decode, tower_p0, tower_world, uniform_p0


def show(title, result):
    print(title)
    for rec in result.trace:
        print(f"  step {rec.step}: masked {rec.masked:3d}  {rec.chosen or '-':18s} {rec.outcome}")
    print(f"  -> {result.outcome}\n")


def main():
    show("tower, greedy:", decode(tower_world(), tower_p0(), "halt"))
    for strategy in ("halt", "backtrack", "capability-gap"):
        show(f"three parts in two cells, {strategy}:", decode(conflict_world(), uniform_p0, strategy, depth=4))


if __name__ == "__main__":
    main()
