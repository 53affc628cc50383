from functools import wraps

from vnhodge.validate.validate import DataFrameSchema
from vnhodge.validate.validation_schemes import ValidationSchemas

validationschemas = ValidationSchemas()


def validate_table(schema_name: str, title: str | None = None):
    """
    Validate the DataFrame passed as the first argument after ``self`` against the
    named schema in :class:`ValidationSchemas` before calling the decorated method.
    """
    schema = getattr(validationschemas, schema_name)
    title = title or f"{schema_name.replace('_', ' ')} validation"

    def decorator(f):
        @wraps(f)
        def wrapper(*args, **kwargs):
            dataframe_to_validate = args[1]
            validation_instance = DataFrameSchema(title, schema)
            validation_instance.validate(dataframe_to_validate)
            return f(*args, **kwargs)

        return wrapper

    return decorator
