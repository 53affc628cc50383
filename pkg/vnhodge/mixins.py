import json
from pathlib import Path

from vnhodge.utils import json_safe


class PandasExportMixin:
    def to_csv(self, file: str | Path | None = None, **kwargs) -> str | None:
        """
        Write the table to a csv file, or return the csv text when no file is given.

        Parameters
        ----------
        file : str | Path, optional
            Path to csv file to be written.
        **kwargs
            pd.DataFrame.to_csv kwargs. See relevant Pandas documentation.
        """
        kwargs.setdefault("index", False)
        return self.df.to_csv(file, **kwargs)

    def to_parquet(self, file: str | Path, **kwargs):
        """
        Write the table to a parquet file.

        Parameters
        ----------
        file : str | Path
            Path to parquet file to be written.
        **kwargs
            pd.DataFrame.to_parquet kwargs. See relevant Pandas documentation.
        """
        kwargs.setdefault("index", False)
        self.df.to_parquet(file, **kwargs)


class JsonExportMixin:
    def to_json(self, file: str | Path | None = None, **kwargs) -> str:
        """
        Serialize the report dictionary to JSON with sorted keys, optionally writing it
        to a file.

        Parameters
        ----------
        file : str | Path, optional
            Path to json file to be written.
        **kwargs
            json.dumps kwargs.

        Returns
        -------
        str
            The JSON text.
        """
        kwargs.setdefault("indent", 2)
        kwargs.setdefault("sort_keys", True)
        text = json.dumps(json_safe(self.to_dict()), **kwargs)
        if file is not None:
            Path(file).write_text(text + "\n")
        return text
