from .backbones import ResNetTrunk, VGGTrunk, build_trunk
from .content import ContentEncoder, ContentFeatures, encode_charwise
from .style import StyleEncoder, style_sets_to_tensor
from .generator import Generator, GeneratedImage, adain
from .critics import (
    Discriminator,
    WriterClassifier,
    discriminative_loss,
    generator_adversarial_loss,
    writer_loss,
)
from .recognizer import Recognizer, content_loss, DecodeResult

__all__ = [
    "ResNetTrunk",
    "VGGTrunk",
    "build_trunk",
    "ContentEncoder",
    "ContentFeatures",
    "encode_charwise",
    "StyleEncoder",
    "style_sets_to_tensor",
    "Generator",
    "GeneratedImage",
    "adain",
    "Discriminator",
    "WriterClassifier",
    "discriminative_loss",
    "generator_adversarial_loss",
    "writer_loss",
    "Recognizer",
    "content_loss",
    "DecodeResult",
]
