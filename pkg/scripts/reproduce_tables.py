#!/usr/bin/env python3
"""
Script para imprimir as partes das tabelas do experimento de soldagem que
dependem apenas do planejamento: colunas de codificação e correlações das estimativas
"""
import sys
from pathlib import Path

# Add project root to path
sys.path.append(str(Path(__file__).parent.parent))

from app.cli.reports import emit_report
from app.coding.service import code_covariates, code_nem, code_rcrs, code_rsm
from app.designs.fixtures import build_welding_fixture
from app.fitting.service import collinearity_diagnostics, estimate_correlations
from app.region.service import build_region, product_transform

CORRELATION_TERMS = ["x_A", "x_B", "x_B^2", "x_A*x_B", "x_A*x_B^2"]


def print_coding_columns(design):
    """RCRS, NEM and RSM columns side by side, one row per run"""
    rcrs = code_rcrs(design, intercept=False).to_frame()
    nem = code_nem(design, intercept=False).to_frame().drop(columns=["A_l"])
    rsm = code_rsm(design, intercept=False).to_frame()
    frame = rcrs.join(nem).join(rsm)
    frame.index = frame.index + 1
    print(emit_report(frame, "table"))


def print_correlations(design):
    """Estimate correlations of the RSM model, with and without the C-H contrasts"""
    matrix = code_rsm(design)
    print(emit_report(estimate_correlations(matrix, CORRELATION_TERMS), "table"))

    with_covariates = matrix.hstack(code_covariates(design))
    shifted = (
        estimate_correlations(with_covariates, CORRELATION_TERMS)
        - estimate_correlations(matrix, CORRELATION_TERMS)
    ).abs().to_numpy().max()
    print(f"\nMaior variação ao incluir C-H: {shifted:.2e}")


def print_diagnostics(design):
    report = collinearity_diagnostics(code_rsm(design))
    print(emit_report(report, "table"))
    print(f"Maior VIF: {report.max_vif:.1f}")

    transformed, diagnostics = product_transform(design)
    print(emit_report(diagnostics, "table"))
    region = build_region(design)
    print(f"Área relativa da região: {region.area_ratio:.3f}"
          f" -> {build_region(transformed).area_ratio:.3f}")
    lo, hi = region.cross_section(0.0)
    print(f"Faixa de x_B no centro (x_A = 0): [{lo:.3f}, {hi:.3f}]")


def main():
    design = build_welding_fixture()
    print("📋 Colunas de codificação (RCRS | NEM | RSM)\n")
    print_coding_columns(design)
    print("\n📊 Correlações das estimativas do modelo RSM\n")
    print_correlations(design)
    print("\n🔍 Colinearidade e transformação por produto\n")
    print_diagnostics(design)


if __name__ == "__main__":
    main()
