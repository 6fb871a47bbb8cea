"""Where the energy of one operation goes, and what the memory system costs.

Run: python3 demos/energy_walkthrough.py
"""
from darkmem.energy_model import DEFAULT_PROFILE, PJ, effective_ops_per_joule, op_energy, source_energy
from darkmem.memory_hierarchy import dram_dominance_crossover


def main():
    prof = DEFAULT_PROFILE
    for prec in ("int16", "fp64"):
        print(f"{prec}: multiply {op_energy(prof, 'multiply', prec) / PJ:.2f} pJ, "
              f"add {op_energy(prof, 'add', prec) / PJ:.2f} pJ")
        for src in ("rf", 4096, 65536, "dram"):
            e = source_energy(prof, prec, src) / PJ
            ops = effective_ops_per_joule(prof, "multiply", prec, src)
            print(f"  operand from {str(src):>6}: access {e:9.2f} pJ, {ops / 1e9:8.2f} Gop/J")
    m = dram_dominance_crossover(prof)
    print(f"DRAM energy matches the int16 multiply at a miss ratio of {m:.4f}")


if __name__ == "__main__":
    main()
