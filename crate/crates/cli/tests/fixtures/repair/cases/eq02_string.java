package lib;

import org.junit.Test;
import static org.junit.Assert.*;

public class CalcTest {
    @Test
    public void signWord() {
        Calc calc = new Calc();
        assertEquals("plus", calc.sign(3));
    }
}
