import json
import logging
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import pandas as pd

from vnhodge.enums import GroupKind
from vnhodge.errors import ParseError, ValidationFailure, VnHodgeError
from vnhodge.flatcw import (
    CechCocycle,
    CwComplexData,
    FlatBundle,
    GroupSpec,
    Incidence,
    Subdivision,
    Term,
    assemble_cochain_complex,
    bundle_from_cocycle,
    make_bundle_from_monodromy,
    regular_cyclic_bundle,
    sampled_z_bundle,
)
from vnhodge.hcomplex import HilbertComplex, make_complex
from vnhodge.hmodule import HilbertModule, ModuleMorphism, free_module
from vnhodge.io.parsers.parser_utils import (
    Location,
    decode_matrix,
    decode_word,
    expect_array,
    expect_object,
)
from vnhodge.validate.decorators import validate_table
from vnhodge.vna_core import FactorBlock, VnAlgebra, make_algebra
from vnhodge.witten import MorseData, make_morse_data

logger = logging.getLogger(__name__)

SUPPORTED_SCHEMA_MAJOR = "1"


@dataclass
class Problem:
    """
    Everything one input document describes. Only the sections present in the
    document are set.
    """

    path: Path | None = None
    algebra: VnAlgebra | None = None
    modules: dict[str, HilbertModule] = field(default_factory=dict)
    morphisms: dict[str, ModuleMorphism] = field(default_factory=dict)
    complex: HilbertComplex | None = None
    cw: CwComplexData | None = None
    bundle: FlatBundle | None = None
    cocycle: CechCocycle | None = None
    nerve: CwComplexData | None = None
    morse: MorseData | None = None

    def cochain_complex(self, eps_d2: float | None = None) -> HilbertComplex:
        """The explicit complex of the document, or the one assembled from cw + bundle."""
        if self.complex is not None:
            return self.complex
        if self.cw is not None and self.bundle is not None:
            return assemble_cochain_complex(self.cw, self.bundle, eps_d2)
        raise ValidationFailure(
            "Document describes neither a complex nor a CW complex with a bundle",
            path=str(self.path),
        )


def load_json(path: str | Path) -> dict:
    path = Path(path)
    try:
        document = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise ParseError(path, f"line {e.lineno} column {e.colno}", e.msg)
    except OSError as e:
        raise ParseError(path, "/", e.strerror or str(e))
    if not isinstance(document, dict):
        raise ParseError(path, "/", "top level must be a JSON object")
    return document


class ProblemParser:
    """
    Parse a JSON input document into algebra, modules, morphisms, complexes, CW data,
    bundles, cocycles and Morse data.

    Parameters
    ----------
    path : str | Path, optional
        Path to the JSON document.
    document : dict, optional
        Already loaded document, used instead of ``path``.
    fibers : int, optional
        Override of the fiber count of sampled regular bundles.
    eps_d2 : float, optional
        d o d tolerance for explicit complexes.

    Examples
    --------
    >>> problem = ProblemParser("z2_circle.json").problem
    >>> problem.cochain_complex()

    """

    def __init__(
        self,
        path: str | Path | None = None,
        document: dict | None = None,
        fibers: int | None = None,
        eps_d2: float | None = None,
    ):
        self.path = Path(path) if path is not None else Path("<document>")
        self.document = document if document is not None else load_json(self.path)
        self.fibers = fibers
        self.eps_d2 = eps_d2
        self.problem = Problem(path=self.path)
        self.parse()

    @contextmanager
    def at(self, location: Location):
        try:
            yield
        except VnHodgeError:
            raise
        except (KeyError, IndexError, TypeError, ValueError, AttributeError) as e:
            reason = f"missing key {e}" if isinstance(e, KeyError) else str(e)
            raise ParseError(self.path, str(location), reason)

    def parse(self):
        root = Location()
        doc = self.document
        with self.at(root / "schema_version"):
            version = str(doc.get("schema_version", "1.0"))
            if version.split(".")[0] != SUPPORTED_SCHEMA_MAJOR:
                raise ValueError(f"unsupported schema version {version}")

        bundle_doc = doc.get("bundle")
        if bundle_doc is not None:
            with self.at(root / "bundle"):
                expect_object(bundle_doc)
        if bundle_doc is not None and "regular" in bundle_doc:
            with self.at(root / "bundle" / "regular"):
                self.problem.bundle = self._regular_bundle(bundle_doc)
                self.problem.algebra = self.problem.bundle.algebra
                self.problem.modules["fiber"] = self.problem.bundle.fiber
            if "algebra" in doc:
                raise ParseError(
                    self.path, "/algebra", "a regular bundle defines its own algebra"
                )

        if "algebra" in doc:
            with self.at(root / "algebra"):
                self.problem.algebra = self.parse_algebra(doc["algebra"])
        with self.at(root / "modules"):
            modules = expect_object(doc.get("modules", {}))
        for name, value in modules.items():
            with self.at(root / "modules" / name):
                self.problem.modules[name] = self.parse_module(value)
        with self.at(root / "morphisms"):
            morphisms = expect_object(doc.get("morphisms", {}))
        for name, value in morphisms.items():
            with self.at(root / "morphisms" / name):
                location = root / "morphisms" / name
                self.problem.morphisms[name] = self.parse_morphism(value, location)
        if "complex" in doc:
            self.problem.complex = self.parse_complex(doc["complex"], root / "complex")
        if "cw" in doc:
            self.problem.cw = self.parse_cw(doc["cw"], root / "cw")
        if bundle_doc is not None and "regular" not in bundle_doc:
            self.problem.bundle = self.parse_bundle(bundle_doc, root / "bundle")
        if "cocycle" in doc:
            self.parse_cocycle(doc["cocycle"], root / "cocycle")
        if "morse" in doc:
            with self.at(root / "morse"):
                if self.problem.cw is None:
                    raise ValueError("Morse data needs a 'cw' section")
                self.problem.morse = self.parse_morse(doc["morse"])

    def _require_algebra(self) -> VnAlgebra:
        if self.problem.algebra is None:
            raise ValueError("an 'algebra' section is required first")
        return self.problem.algebra

    @validate_table("algebra_blocks", "algebra blocks validation")
    def _algebra_from_table(self, df: pd.DataFrame, normalize: bool) -> VnAlgebra:
        blocks = [
            FactorBlock(str(r.label), int(r.n), float(r.mu), float(r.rho))
            for r in df.itertuples()
        ]
        return make_algebra(blocks, normalize=normalize)

    def parse_algebra(self, value: dict) -> VnAlgebra:
        if not value["blocks"]:
            return make_algebra([])
        df = pd.DataFrame.from_records(value["blocks"])
        if "label" not in df:
            df["label"] = [f"b{i}" for i in range(len(df))]
        df["rho"] = df["rho"].fillna(1.0) if "rho" in df else 1.0
        return self._algebra_from_table(df, bool(value.get("normalize", False)))

    @validate_table("module_multiplicities", "module validation")
    def _module_from_table(self, df: pd.DataFrame) -> HilbertModule:
        return HilbertModule(self._require_algebra(), tuple(int(m) for m in df["mult"]))

    def parse_module(self, value: dict) -> HilbertModule:
        if "free" in value:
            return free_module(self._require_algebra(), int(value["free"]))
        return self._module_from_table(pd.DataFrame({"mult": list(value["mult"])}))

    def module_ref(self, value: Any) -> HilbertModule:
        if isinstance(value, str):
            if value not in self.problem.modules:
                raise ValueError(f"unknown module {value!r}")
            return self.problem.modules[value]
        return self.parse_module(value)

    def parse_morphism(self, value: Any, location: Location) -> ModuleMorphism:
        if isinstance(value, str):
            if value not in self.problem.morphisms:
                raise ValueError(f"unknown morphism {value!r}")
            return self.problem.morphisms[value]
        with self.at(location / "source"):
            source = self.module_ref(value["source"])
        with self.at(location / "target"):
            target = self.module_ref(value.get("target", value["source"]))
        with self.at(location / "blocks"):
            blocks = expect_array(value["blocks"])
            if len(blocks) != len(source.mult):
                raise ValueError(f"expected {len(source.mult)} blocks, got {len(blocks)}")
        decoded = []
        for i, (block, m_in, m_out) in enumerate(zip(blocks, source.mult, target.mult)):
            with self.at(location / "blocks" / i):
                decoded.append(decode_matrix(block, (m_out, m_in)))
        return ModuleMorphism(source, target, tuple(decoded))

    def parse_complex(self, value: dict, location: Location) -> HilbertComplex:
        with self.at(location / "modules"):
            refs = expect_array(expect_object(value)["modules"])
        modules = []
        for i, ref in enumerate(refs):
            with self.at(location / "modules" / i):
                modules.append(self.module_ref(ref))
        with self.at(location / "differentials"):
            refs = expect_array(value.get("differentials", []))
        differentials = []
        for i, ref in enumerate(refs):
            with self.at(location / "differentials" / i):
                differentials.append(self.parse_morphism(ref, location / "differentials" / i))
        return make_complex(modules, differentials, self.eps_d2)

    @validate_table("incidence_terms", "incidence validation")
    def _incidence_from_table(self, df: pd.DataFrame, words: list) -> tuple[Incidence, ...]:
        incidences = {}
        for source, target, coef, word in zip(df["from"], df["to"], df["coef"], words):
            incidences.setdefault((str(source), str(target)), []).append(
                Term(int(coef), word)
            )
        return tuple(Incidence(s, t, tuple(terms)) for (s, t), terms in incidences.items())

    def parse_cw(self, value: dict, location: Location) -> CwComplexData:
        with self.at(location / "cells"):
            cells = tuple(
                tuple(str(c) for c in expect_array(dim_cells))
                for dim_cells in expect_array(expect_object(value)["cells"])
            )
        with self.at(location / "incidence"):
            incidences = expect_array(value.get("incidence", []))
        rows, words = [], []
        for i, inc in enumerate(incidences):
            with self.at(location / "incidence" / i):
                source, target = expect_object(inc)["from"], inc["to"]
                terms = expect_array(inc["terms"])
            for j, term in enumerate(terms):
                with self.at(location / "incidence" / i / "terms" / j):
                    rows.append({"from": source, "to": target, "coef": term["coef"]})
                    words.append(decode_word(term.get("word", [])))
        df = pd.DataFrame.from_records(rows, columns=["from", "to", "coef"])
        incidence = self._incidence_from_table(df, words) if len(df) else ()
        return CwComplexData(cells, incidence)

    def parse_group(self, value: dict) -> GroupSpec:
        kind = GroupKind.from_user_input(value["kind"])
        return GroupSpec(
            kind,
            tuple(value.get("generators", ())),
            order=value.get("order"),
            elements=tuple(value.get("elements", ())),
            table=tuple(tuple(row) for row in value.get("table", ())),
            identity=value.get("identity"),
        )

    def _regular_bundle(self, value: dict) -> FlatBundle:
        regular = value["regular"]
        generators = tuple(regular.get("generators", ("g",)))
        match regular["kind"]:
            case "cyclic":
                return regular_cyclic_bundle(int(regular["order"]), generators)
            case "sampled":
                fibers = self.fibers or int(regular.get("fibers", 256))
                return sampled_z_bundle(
                    fibers,
                    generators,
                    regular.get("charges"),
                    regular.get("group_kind", GroupKind.COMMUTING),
                )
            case other:
                raise ValueError(f"unknown regular bundle kind {other!r}")

    def parse_bundle(self, value: dict, location: Location) -> FlatBundle:
        with self.at(location / "group"):
            spec = self.parse_group(value["group"])
        with self.at(location / "fiber"):
            fiber = self.module_ref(value["fiber"])
        with self.at(location / "monodromy"):
            monodromy = expect_object(value.get("monodromy", {}))
        images = {}
        for generator, ref in monodromy.items():
            with self.at(location / "monodromy" / generator):
                images[generator] = self.parse_morphism(
                    ref, location / "monodromy" / generator
                )
        return make_bundle_from_monodromy(spec, fiber, images)

    def parse_cocycle(self, value: dict, location: Location):
        with self.at(location / "fiber"):
            fiber = self.module_ref(expect_object(value)["fiber"])
        with self.at(location / "transitions"):
            items = expect_array(value.get("transitions", []))
        transitions = {}
        for i, item in enumerate(items):
            with self.at(location / "transitions" / i):
                key = (str(item["from"]), str(item["to"]), str(item["component"]))
                transitions[key] = self.parse_morphism(
                    item["map"], location / "transitions" / i / "map"
                )
        with self.at(location / "triples"):
            triples = tuple(
                tuple(tuple(str(x) for x in key) for key in triple)
                for triple in value.get("triples", [])
            )
        with self.at(location / "patches"):
            patches = tuple(str(p) for p in value["patches"])
        self.problem.cocycle = CechCocycle(fiber, patches, transitions, triples)
        if "nerve" in value:
            self.problem.nerve = self.parse_cw(value["nerve"], location / "nerve")
            if self.problem.bundle is None:
                self.problem.bundle = bundle_from_cocycle(
                    self.problem.cocycle, self.problem.nerve
                )

    @validate_table("morse_values", "Morse values validation")
    def _morse_from_table(
        self, df: pd.DataFrame, matching: list, self_indexing: bool
    ) -> MorseData:
        values = dict(zip(df["cell"].astype(str), df["value"].astype(float)))
        return make_morse_data(self.problem.cw, values, matching, self_indexing)

    def parse_morse(self, value: dict) -> MorseData:
        df = pd.DataFrame(
            {"cell": list(value["values"].keys()), "value": list(value["values"].values())}
        )
        matching = [(str(a), str(b)) for a, b in value.get("matching", [])]
        return self._morse_from_table(df, matching, bool(value.get("self_indexing", False)))


class SubdivisionParser:
    """
    Parse a subdivision file: the fine complex and, per fine cell, the group-ring
    combination of coarse cells it maps to. The coarse complex is read from the file
    or passed in.
    """

    def __init__(self, path: str | Path, coarse: CwComplexData | None = None):
        self.path = Path(path)
        self.document = load_json(self.path)
        self._parser = ProblemParser(self.path, document={})
        self.subdivision = self.parse(coarse)

    def parse(self, coarse: CwComplexData | None) -> Subdivision:
        root = Location()
        doc = self.document
        if coarse is None:
            if "coarse" not in doc:
                raise ParseError(self.path, "/coarse", "no coarse complex given")
            coarse = self._parser.parse_cw(doc["coarse"], root / "coarse")
        if "fine" not in doc:
            raise ParseError(self.path, "/fine", "missing key 'fine'")
        fine = self._parser.parse_cw(doc["fine"], root / "fine")

        with self._parser.at(root / "recipe"):
            items = expect_array(doc.get("recipe", []))
        recipe = []
        for i, item in enumerate(items):
            with self._parser.at(root / "recipe" / i):
                terms = tuple(
                    Term(int(t["coef"]), decode_word(t.get("word", [])))
                    for t in item["terms"]
                )
                source, target = str(item["fine"]), str(item["coarse"])
                if source not in fine.cell_dimensions:
                    raise ValueError(f"unknown fine cell {source!r}")
                if target not in coarse.cell_dimensions:
                    raise ValueError(f"unknown coarse cell {target!r}")
                if fine.cell_dimensions[source] != coarse.cell_dimensions[target]:
                    raise ValueError(f"cells {source!r}, {target!r} differ in dimension")
                recipe.append(Incidence(source, target, terms))
        if len(fine.cells) != len(coarse.cells):
            raise ParseError(self.path, "/fine", "fine and coarse dimensions differ")
        return Subdivision(coarse, fine, tuple(recipe))
